#include "util.h"

int quadruple(int v) {
    return twice(twcie(v));
}

int main() { return quadruple(1) == 4 ? 0 : 1; }
