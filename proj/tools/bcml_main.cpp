#include <cstdio>

int main() {
  std::puts("bcml: pipelines not wired yet");
  return 2;
}
