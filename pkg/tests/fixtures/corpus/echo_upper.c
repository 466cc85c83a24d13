static int lower(int c) {
    if (c >= 97 && c <= 122)
        return 1;
    return 0;
}

int main(void) {
    int c;
    while ((c = getchar()) != -1) {
        if (lower(c))
            putchar(c - 32);
        else
            putchar(c);
    }
    return 0;
}
