#define SQUARE(x) ((x) * (x))

int area(int w, int h) {
    return SQUARE(w, h);
}

int main() { return area(2, 2) == 4 ? 0 : 1; }
