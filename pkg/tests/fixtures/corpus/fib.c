static int fib(int n) {
    int a;
    int b;
    int t;
    int i;
    a = 0;
    b = 1;
    for (i = 0; i < n; i = i + 1) {
        t = a + b;
        a = b;
        b = t;
    }
    return a;
}

int main(void) {
    int i;
    for (i = 0; i < 15; i = i + 1) {
        print_int(fib(i));
        putchar(32);
    }
    putchar(10);
    return 0;
}
