#include <cstdio>

int main() {
    std::puts("defgraph cli placeholder");
    return 0;
}
