void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct header {
    int magic;
    int count;
    int stamp;
    int owner;
    int flags;
    int reserved;
};

struct record {
    int kind;
    int value;
    int weight;
    int tag;
};

int total;
int seen;

int scale(int v, int w)
{
    int r;
    r = v * w;
    if (r < 0) {
        r = 0 - r;
    }
    return r % 1000;
}

void show(char *label, int v)
{
    print_str(label);
    print_int(v);
    putchar(10);
}

int process(struct record *rec, int index)
{
    int s;
    int t;
    int k;
    k = rec->kind;
    t = rec->tag;
    s = scale(rec->value, rec->weight);
    total = total + s;
    seen = seen + 1;
    show("rec ", index);
    show(" score ", s);
    show(" tag ", t & 255);
    return k;
}

int summarize(struct header *h, int kinds)
{
    int owner;
    int stamp;
    owner = h->owner;
    stamp = h->stamp;
    show("owner ", owner % 97);
    show("stamp ", stamp % 89);
    show("kinds ", kinds);
    show("total ", total);
    return seen;
}

int main(void)
{
    struct header h;
    struct record *recs;
    int n;
    int i;
    int kinds;
    int got;
    got = read_input((char *)&h, 24);
    if (got < 24) {
        print_str("short\n");
        return 1;
    }
    n = h.count;
    if (n < 0) {
        n = 0;
    }
    if (n > 6) {
        n = 6;
    }
    recs = malloc(n * 16 + 16);
    read_input((char *)recs, n * 16);
    kinds = 0;
    for (i = 0; i < n; i++) {
        kinds = kinds + process(&recs[i], i);
    }
    free(recs);
    got = summarize(&h, kinds & 7);
    show("seen ", got);
    return 0;
}
