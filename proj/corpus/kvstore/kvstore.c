void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct entry {
    int key;
    int value;
    struct entry *next;
};

struct request {
    int op;
    int key;
    int value;
    int client;
};

struct entry *buckets[8];
int stored;

int hash(int key)
{
    int h;
    h = key * 31;
    if (h < 0) {
        h = 0 - h;
    }
    return h % 8;
}

void put(int key, int value)
{
    struct entry *e;
    int b;
    b = hash(key);
    e = malloc(12);
    e->key = key;
    e->value = value;
    e->next = buckets[b];
    buckets[b] = e;
    stored = stored + 1;
}

int get(int key)
{
    struct entry *e;
    e = buckets[hash(key)];
    while (e != 0) {
        if (e->key == key) {
            return e->value;
        }
        e = e->next;
    }
    return 0 - 1;
}

void clear(void)
{
    int i;
    struct entry *e;
    struct entry *nx;
    for (i = 0; i < 8; i++) {
        e = buckets[i];
        while (e != 0) {
            nx = e->next;
            free(e);
            e = nx;
        }
        buckets[i] = 0;
    }
}

int serve(struct request *rq)
{
    int client;
    int v;
    client = rq->client;
    v = 0;
    if ((rq->op & 1) == 0) {
        put(rq->key & 255, rq->value & 4095);
    } else {
        v = get(rq->key & 255);
    }
    print_str("client ");
    print_int(client & 255);
    print_str(" -> ");
    print_int(v);
    putchar(10);
    return v;
}

int main(void)
{
    struct request rq[4];
    int i;
    int acc;
    read_input((char *)rq, 64);
    acc = 0;
    for (i = 0; i < 4; i++) {
        acc = acc + serve(&rq[i]);
    }
    print_str("stored ");
    print_int(stored);
    putchar(10);
    clear();
    print_int(acc);
    putchar(10);
    return 0;
}
