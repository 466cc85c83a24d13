static int depth;

static int descend(int n) {
    int below;
    depth = depth + 1;
    if (n == 0)
        return depth;
    below = descend(n - 1);
    return below + n;
}

static int ack_lite(int m, int n) {
    if (m == 0)
        return n + 1;
    if (n == 0)
        return ack_lite(m - 1, 1);
    return ack_lite(m - 1, ack_lite(m, n - 1));
}

int main(void) {
    print_int(descend(6));
    putchar(10);
    print_int(ack_lite(2, 3));
    putchar(10);
    print_int(depth);
    putchar(10);
    return 0;
}
