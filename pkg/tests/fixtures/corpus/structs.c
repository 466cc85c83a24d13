struct point { int x; int y; };
struct flags { unsigned ready : 1; unsigned mode : 3; unsigned count : 12; };

static struct point origin;
static struct flags state;

static int taxicab(struct point *p) {
    int dx;
    int dy;
    dx = p->x;
    dy = p->y;
    if (dx < 0)
        dx = -dx;
    if (dy < 0)
        dy = -dy;
    return dx + dy;
}

int main(void) {
    struct point p;
    p.x = -3;
    p.y = 7;
    origin.x = 0;
    state.ready = 1;
    state.mode = 5;
    state.count = 1234;
    print_int(taxicab(&p));
    putchar(10);
    print_int(state.ready + state.mode + state.count);
    putchar(10);
    return state.mode;
}
