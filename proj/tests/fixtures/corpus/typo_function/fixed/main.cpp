#include "util.h"

int quadruple(int v) {
    return twice(twice(v));
}

int main() { return quadruple(1) == 4 ? 0 : 1; }
