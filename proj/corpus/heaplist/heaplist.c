void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct node {
    int key;
    int val;
    struct node *next;
};

struct cfg {
    int n;
    int seed;
    int mode;
    int stamp;
};

struct node *push(struct node *head, int key, int val)
{
    struct node *n;
    n = malloc(12);
    n->key = key;
    n->val = val;
    n->next = head;
    return n;
}

int sum(struct node *h)
{
    int s;
    s = 0;
    while (h != 0) {
        s = s + (h->val & 1023);
        h = h->next;
    }
    return s;
}

int count(struct node *h)
{
    int c;
    c = 0;
    while (h != 0) {
        c = c + 1;
        h = h->next;
    }
    return c;
}

void release(struct node *h)
{
    struct node *nx;
    while (h != 0) {
        nx = h->next;
        free(h);
        h = nx;
    }
}

char *scratch(int n)
{
    char *p;
    int i;
    p = malloc(n + 1);
    for (i = 0; i < n; i++) {
        p[i] = 'a' + i % 26;
    }
    p[n] = 0;
    return p;
}

int main(void)
{
    struct cfg c;
    int pairs[16];
    struct node *head;
    char *tmp;
    int n;
    int i;
    int seed;
    read_input((char *)&c, 16);
    n = c.n & 7;
    if (n == 0) {
        n = 1;
    }
    read_input((char *)pairs, n * 8);
    seed = c.seed;
    head = 0;
    for (i = 0; i < n; i++) {
        head = push(head, pairs[2 * i], pairs[2 * i + 1]);
    }
    tmp = scratch(n + 3);
    print_str(tmp);
    putchar(10);
    print_int(count(head));
    putchar(10);
    print_int(sum(head));
    putchar(10);
    free(tmp);
    tmp = scratch(5);
    print_str(tmp);
    putchar(10);
    release(head);
    free(tmp);
    print_int(seed & 255);
    putchar(10);
    return 0;
}
