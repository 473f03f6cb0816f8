#include <utility>

int main() {
    std::pair<int, int> range{1, 5};
    return range.second - range.first == 4 ? 0 : 1;
}
