#include <cstdio>

int main() {
  std::fprintf(stderr, "causal: command suite not wired up yet\n");
  return 2;
}
