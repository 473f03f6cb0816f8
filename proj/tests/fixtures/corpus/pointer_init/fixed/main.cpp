#include <vector>

double first(const std::vector<double>& v) {
    const double* p = &v[0];
    return *p;
}

int main() { return first({1.5}) > 1.0 ? 0 : 1; }
