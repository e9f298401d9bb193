#include <cstdio>
int main() {
    Adder a;
    if (a.add(2, 3) != 5) {
        std::printf("ASSERT FAIL: 2 + 3 != 5\n");
        return 1;
    }
    std::printf("ALL TESTS PASS\n");
    return 0;
}
