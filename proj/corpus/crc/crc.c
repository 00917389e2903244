void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

unsigned table[256];

void make_table(void)
{
    unsigned c;
    int n;
    int k;
    for (n = 0; n < 256; n++) {
        c = n;
        for (k = 0; k < 8; k++) {
            if (c & 1) {
                c = 0xEDB88320u ^ (c >> 1);
            } else {
                c = c >> 1;
            }
        }
        table[n] = c;
    }
}

unsigned crc(char *buf, int len)
{
    unsigned c;
    int i;
    c = 0xFFFFFFFFu;
    for (i = 0; i < len; i++) {
        c = table[(c ^ buf[i]) & 255] ^ (c >> 8);
    }
    return c ^ 0xFFFFFFFFu;
}

int main(void)
{
    char buf[64];
    int len;
    unsigned c;
    make_table();
    len = read_input(buf, 64);
    c = crc(buf, len);
    print_int(c & 0xFFFF);
    putchar(10);
    print_int(c >> 16);
    putchar(10);
    return 0;
}
