// Regenerates tests/fixtures/golden.hewt. Run only when a behaviour change
// is intended; the golden test pins whatever this writes.

#include <cstdio>

#include "support.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_golden OUT.hewt\n");
    return 2;
  }
  const auto values = hairedit::testing::golden_values();
  hairedit::io::write_archive(argv[1], values);
  for (const auto& [name, t] : values) std::printf("%-24s %zu values\n", name.c_str(), t.values.size());
  return 0;
}
