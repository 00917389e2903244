void *malloc(unsigned n);
void free(void *p);
int strlen(char *s);
void *memcpy(void *dst, void *src, unsigned n);
int read_input(char *buf, int n);
void print_int(int v);
void print_str(char *s);
int putchar(int c);

struct item {
    int sku;
    int qty;
    int price;
    int vendor;
};

struct order {
    int customer;
    int count;
    int priority;
    int note;
    struct item items[3];
};

int grand;

int line_total(struct item *it)
{
    int q;
    int p;
    int v;
    q = it->qty & 31;
    p = it->price & 1023;
    v = it->vendor;
    print_str("  sku ");
    print_int(it->sku & 4095);
    print_str(" vendor ");
    print_int(v & 15);
    putchar(10);
    return q * p;
}

int order_total(struct order *o)
{
    int i;
    int t;
    int n;
    int cust;
    cust = o->customer;
    n = o->count & 3;
    t = 0;
    for (i = 0; i < n; i++) {
        t = t + line_total(&o->items[i]);
    }
    print_str("customer ");
    print_int(cust & 1023);
    print_str(" total ");
    print_int(t);
    putchar(10);
    return t;
}

void receipt(struct order *o, int t)
{
    char *text;
    int note;
    note = o->note;
    text = malloc(16);
    text[0] = 'o';
    text[1] = 'k';
    text[2] = 0;
    print_str(text);
    putchar(32);
    print_int(note & 63);
    putchar(10);
    free(text);
    grand = grand + t;
}

int main(void)
{
    struct order o;
    int t;
    int prio;
    read_input((char *)&o, 64);
    prio = o.priority;
    t = order_total(&o);
    receipt(&o, t);
    print_str("grand ");
    print_int(grand);
    putchar(10);
    print_int(prio & 3);
    putchar(10);
    return 0;
}
