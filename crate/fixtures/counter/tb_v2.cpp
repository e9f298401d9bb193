#include <cstdio>
int main() {
    Counter c;
    c.reset();
    for (unsigned i = 1; i <= 20; ++i) {
        c.tick();
        if (c.value() != (i & 0xF)) {
            std::printf("ASSERT FAIL: increment expected %u got %u\n", i & 0xF, c.value());
            return 1;
        }
    }
    c.reset();
    if (c.value() != 0) {
        std::printf("ASSERT FAIL: reset expected 0 got %u\n", c.value());
        return 1;
    }
    std::printf("ALL TESTS PASS\n");
    return 0;
}
