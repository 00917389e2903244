void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct hdr {
    int len;
    int kind;
    int stamp;
    int owner;
};

int report(int v)
{
    print_int(v);
    putchar(10);
    return v;
}

int inspect(struct hdr *h, int mode)
{
    struct hdr *p;
    int x;
    int y;
    if (mode == 0) {
        p = h;
    }
    y = h->owner;
    if (mode == 0) {
        x = p->len;
        report(x & 255);
    }
    x = h->stamp;
    report(x & 255);
    report(y & 255);
    return x;
}

int main(void)
{
    char mode[4];
    struct hdr h;
    int r;
    read_input(mode, 4);
    read_input((char *)&h, 16);
    r = inspect(&h, mode[0]);
    report(h.kind & 15);
    report(r & 7);
    return 0;
}
