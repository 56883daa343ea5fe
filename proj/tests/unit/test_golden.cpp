#include <cmath>

#include "doctest.h"
#include "support.hpp"

using namespace hairedit;
namespace ht = hairedit::testing;

// Frozen outputs of the toy stack. A mismatch means a numerical change in the
// generator, backends, losses or optimizer; regenerate with make_golden only
// when that change is intended.
TEST_CASE("golden regression values") {
  const io::TensorArchive frozen = io::read_archive(std::filesystem::path(HAIREDIT_FIXTURES) / "golden.hewt");
  const io::TensorArchive now = ht::golden_values();
  REQUIRE(frozen.size() == now.size());
  for (const auto& [key, tensor] : frozen) {
    CAPTURE(key);
    const auto it = now.find(key);
    REQUIRE(it != now.end());
    CHECK(it->second.dims == tensor.dims);
    REQUIRE(it->second.values.size() == tensor.values.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < tensor.values.size(); ++i) {
      worst = std::max(worst, std::abs(it->second.values[i] - tensor.values[i]));
    }
    CHECK(worst <= 1e-9);
  }
}
