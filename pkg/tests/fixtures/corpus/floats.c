static double half(double x) {
    return x / 2;
}

int main(void) {
    double d;
    float f;
    int i;
    d = 1;
    for (i = 0; i < 12; i = i + 1)
        d = d * 1.5;
    f = d;
    print_int(d);
    putchar(10);
    print_int(f * 100);
    putchar(10);
    print_int(half(9.0) * 1000);
    putchar(10);
    print_int(3.9);
    putchar(10);
    print_int(-3.9);
    putchar(10);
    return 0;
}
