struct Counter {
    int value = 0;

    void bump() const { ++value; }
};

int main() {
    Counter c;
    c.bump();
    return c.value == 1 ? 0 : 1;
}
