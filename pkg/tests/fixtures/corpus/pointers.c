static int table[8];

static void fill(int *base, int n) {
    int *p;
    p = base;
    while (p - base < n) {
        *p = (p - base) * 3;
        p++;
    }
}

static int total(int *base, int n) {
    int *p;
    int acc;
    acc = 0;
    for (p = base; p < base + n; p++)
        acc += *p;
    return acc;
}

int main(void) {
    int i;
    fill(table, 8);
    for (i = 0; i < 8; i = i + 1) {
        print_int(table[i]);
        putchar(32);
    }
    putchar(10);
    print_int(total(table, 8));
    putchar(10);
    return 0;
}
