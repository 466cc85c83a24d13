static int isletter(int c) {
    if (c >= 97 && c <= 122)
        return 1;
    if (c >= 65 && c <= 90)
        return 1;
    return 0;
}

static int getword(char *buf) {
    char *s;
    int c;
    while ((c = getchar()) != -1 && isletter(c) == 0)
        ;
    if (c == -1)
        return 0;
    s = buf;
    for (; c != -1 && isletter(c); c = getchar())
        *s++ = c;
    *s = 0;
    return 1;
}

int main(void) {
    char buf[64];
    int words;
    int letters;
    int i;
    words = 0;
    letters = 0;
    while (getword(buf)) {
        words = words + 1;
        for (i = 0; buf[i] != 0; i = i + 1)
            letters = letters + 1;
    }
    print_int(words);
    putchar(32);
    print_int(letters);
    putchar(10);
    return words;
}
