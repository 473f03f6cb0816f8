int clamp(int v, int lo, int hi) {
    return v < lo ? lo : (v > hi ? hi : v);
}

int main() {
    const int v = clamp(12, 0);
    return v == 10 ? 0 : 1;
}
