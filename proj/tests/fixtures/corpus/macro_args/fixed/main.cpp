#define SQUARE(x) ((x) * (x))

int area(int w, int h) {
    return w * h;
}

int main() { return area(2, 2) == 4 ? 0 : 1; }
