struct node {
    char *word;
    int count;
    struct node *left;
    struct node *right;
};

static int isletter(int c);
static int getword(char *buf);
void tprint(struct node *tree);
int main(int argc, char *argv[]);
static struct node *words = 0;

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
    for (s = buf; (c = isletter(c)) != 0; c = getchar())
        *s++ = c;
    *s = 0;
    if (s > buf)
        return 1;
    return 0;
}

void tprint(struct node *tree) {
    if (tree != 0) {
        tprint(tree->left);
        print_int(tree->count);
        tprint(tree->right);
    }
}

int main(int argc, char *argv[]) {
    char buf[40];
    while (getword(buf) != 0)
        ;
    tprint(words);
    return 0;
}
