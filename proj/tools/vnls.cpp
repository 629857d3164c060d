#include <cstdio>
int main() { std::puts("vnls cli placeholder"); return 0; }
