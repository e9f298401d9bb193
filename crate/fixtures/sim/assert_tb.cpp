#include <cstdio>
int main() {
    Adder a;
    std::printf("checking counter\n");
    if (a.add(2, 2) != 5) {
        std::printf("ASSERT FAIL: counter mismatch at t=5\n");
        return 1;
    }
    return 0;
}
