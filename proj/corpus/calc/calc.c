void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct program_header {
    int length;
    int origin;
    int build;
    int checksum;
};

int stack[16];
int sp;

void push(int v)
{
    if (sp < 16) {
        stack[sp] = v;
        sp = sp + 1;
    }
}

int pop(void)
{
    if (sp > 0) {
        sp = sp - 1;
        return stack[sp];
    }
    return 0;
}

int step(int op, int arg)
{
    int a;
    int b;
    if (op == 0) {
        push(arg);
        return 0;
    }
    b = pop();
    a = pop();
    if (op == 1) {
        push(a + b);
    } else if (op == 2) {
        push(a - b);
    } else {
        push(a * b);
    }
    return 1;
}

int run(char *code, int n)
{
    int i;
    int ops;
    ops = 0;
    for (i = 0; i + 1 < n; i = i + 2) {
        ops = ops + step(code[i] & 3, code[i + 1] & 15);
    }
    return ops;
}

int main(void)
{
    struct program_header ph;
    char code[32];
    int n;
    int ops;
    int build;
    int origin;
    read_input((char *)&ph, 16);
    n = read_input(code, 32);
    build = ph.build;
    origin = ph.origin;
    sp = 0;
    ops = run(code, n);
    print_str("ops ");
    print_int(ops);
    putchar(10);
    print_str("top ");
    print_int(pop());
    putchar(10);
    print_str("build ");
    print_int(build & 255);
    putchar(10);
    print_str("origin ");
    print_int(origin & 255);
    putchar(10);
    return 0;
}
