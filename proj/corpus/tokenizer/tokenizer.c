void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct hdr {
    int version;
    int id;
    int stamp;
    int width;
};

int words;
int longest;

int count_words(char *s)
{
    int n;
    int i;
    int inword;
    int len;
    n = 0;
    inword = 0;
    len = strlen(s);
    for (i = 0; i < len; i++) {
        if (s[i] == ' ') {
            inword = 0;
        } else {
            if (inword == 0) {
                n = n + 1;
            }
            inword = 1;
        }
    }
    return n;
}

int longest_word(char *s)
{
    int best;
    int cur;
    int i;
    best = 0;
    cur = 0;
    i = 0;
    while (s[i] != 0) {
        if (s[i] == ' ') {
            cur = 0;
        } else {
            cur = cur + 1;
            if (cur > best) {
                best = cur;
            }
        }
        i = i + 1;
    }
    return best;
}

void emit(char *label, int v)
{
    print_str(label);
    print_int(v);
    putchar(10);
}

int checksum(char *s, int n)
{
    int i;
    int sum;
    sum = 0;
    for (i = 0; i < n; i++) {
        sum = sum + s[i];
    }
    return sum;
}

int main(void)
{
    struct hdr h;
    char buf[72];
    char *s;
    int got;
    int first;
    int third;
    int id;
    int len;
    read_input((char *)&h, 16);
    got = read_input(buf, 64);
    if (got < 0) {
        got = 0;
    }
    buf[got] = 0;
    s = buf;
    first = s[0];
    third = s[2];
    id = h.id;
    len = strlen(s);
    words = count_words(s);
    longest = longest_word(s);
    emit("id ", id % 1000);
    emit("len ", len);
    emit("words ", words);
    emit("longest ", longest);
    emit("first ", first);
    emit("third ", third);
    emit("sum ", checksum(s, len));
    emit("stamp ", h.stamp & 4095);
    return 0;
}
