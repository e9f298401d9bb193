#include <cstdio>
extern char **environ;
int main() {
    for (char **e = environ; *e; ++e) {
        std::printf("ENV %s\n", *e);
    }
    std::printf("ALL TESTS PASS\n");
    return 0;
}
