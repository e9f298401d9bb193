#include <cstdio>
int main() {
    std::printf("spinning\n");
    std::fflush(stdout);
    volatile unsigned long n = 0;
    for (;;) {
        n = n + 1;
    }
}
