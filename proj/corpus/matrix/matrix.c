void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct dims {
    int rows;
    int cols;
    int scale;
    int label;
};

int m[16];
int out[16];

void fill(int *dst, char *src, int n)
{
    int i;
    for (i = 0; i < n; i++) {
        dst[i] = src[i] & 15;
    }
}

void transpose(int *a, int *b, int r, int c)
{
    int i;
    int j;
    for (i = 0; i < r; i++) {
        for (j = 0; j < c; j++) {
            b[j * r + i] = a[i * c + j];
        }
    }
}

int trace_of(int *a, int n)
{
    int i;
    int t;
    t = 0;
    for (i = 0; i < n; i++) {
        t = t + a[i * n + i];
    }
    return t;
}

void dump(int *a, int r, int c)
{
    int i;
    int j;
    for (i = 0; i < r; i++) {
        for (j = 0; j < c; j++) {
            print_int(a[i * c + j]);
            putchar(32);
        }
        putchar(10);
    }
}

int main(void)
{
    struct dims d;
    char raw[16];
    int r;
    int c;
    int label;
    int scale;
    read_input((char *)&d, 16);
    read_input(raw, 16);
    r = 4;
    c = 4;
    label = d.label;
    scale = d.scale;
    fill(m, raw, 16);
    transpose(m, out, r, c);
    dump(out, r, c);
    print_int(trace_of(m, 4));
    putchar(10);
    print_int(label & 63);
    putchar(10);
    print_int(scale & 7);
    putchar(10);
    return 0;
}
