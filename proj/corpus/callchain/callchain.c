void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct packet {
    int op;
    int a;
    int b;
    int seq;
    int ttl;
    int tag;
};

int depth_seen;

int add(int a, int b)
{
    return a + b;
}

int sub(int a, int b)
{
    return a - b;
}

int mul(int a, int b)
{
    return a * b;
}

int apply(int op, int a, int b)
{
    int (*fn)(int, int);
    int r;
    fn = add;
    if (op == 1) {
        fn = sub;
    }
    if (op == 2) {
        fn = mul;
    }
    r = fn(a, b);
    return r;
}

int leaf(int v, int seq)
{
    int x;
    x = v + seq;
    print_int(x);
    putchar(10);
    return x;
}

int decode(struct packet *p)
{
    int v;
    int s;
    int op;
    op = p->op & 3;
    s = p->seq;
    v = apply(op, p->a & 255, p->b & 255);
    return leaf(v, s & 15);
}

int route(struct packet *p, int hops)
{
    int r;
    int t;
    t = p->tag;
    depth_seen = depth_seen + 1;
    r = decode(p);
    print_str("tag ");
    print_int(t % 100);
    putchar(10);
    if (hops > 1) {
        r = r + route(p, hops - 1);
    }
    return r;
}

int dispatch(struct packet *p)
{
    int hops;
    int r;
    hops = 2;
    r = route(p, hops);
    print_str("result ");
    print_int(r);
    putchar(10);
    return r;
}

int main(void)
{
    struct packet pk[2];
    int i;
    int sum;
    read_input((char *)pk, 48);
    sum = 0;
    for (i = 0; i < 2; i++) {
        sum = sum + dispatch(&pk[i]);
    }
    print_str("depth ");
    print_int(depth_seen);
    putchar(10);
    print_str("sum ");
    print_int(sum);
    putchar(10);
    return 0;
}
