void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct image_header {
    int width;
    int height;
    int depth;
    int created;
    int author;
    int comment;
};

int hist[8];

char *load_rows(int w, int h)
{
    char *px;
    px = malloc(w * h + 4);
    read_input(px, w * h);
    return px;
}

int brightness(char *px, int n)
{
    int i;
    int s;
    s = 0;
    for (i = 0; i < n; i++) {
        s = s + (px[i] & 255);
    }
    return s / n;
}

void histogram(char *px, int n)
{
    int i;
    int b;
    for (i = 0; i < n; i++) {
        b = (px[i] & 255) / 32;
        hist[b] = hist[b] + 1;
    }
}

void show_header(struct image_header *ih)
{
    int created;
    int author;
    created = ih->created;
    author = ih->author;
    print_str("created ");
    print_int(created & 1023);
    putchar(10);
    print_str("author ");
    print_int(author & 511);
    putchar(10);
}

int main(void)
{
    struct image_header ih;
    char *px;
    char *copy;
    int w;
    int h;
    int n;
    int i;
    read_input((char *)&ih, 24);
    w = ih.width & 7;
    h = ih.height & 7;
    if (w == 0) {
        w = 1;
    }
    if (h == 0) {
        h = 1;
    }
    n = w * h;
    px = load_rows(w, h);
    show_header(&ih);
    copy = malloc(n + 1);
    memcpy(copy, px, n);
    histogram(copy, n);
    print_str("bright ");
    print_int(brightness(px, n));
    putchar(10);
    for (i = 0; i < 8; i++) {
        print_int(hist[i]);
        putchar(32);
    }
    putchar(10);
    free(copy);
    free(px);
    print_int(ih.comment & 127);
    putchar(10);
    return 0;
}
