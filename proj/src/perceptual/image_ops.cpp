#include "hairedit/perceptual/image_ops.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

#include "hairedit/error.hpp"

namespace hairedit {

namespace {

using Key = std::tuple<int, int, int, int, int>;

template <typename T, typename Build>
std::shared_ptr<const T> cached(const Key& key, Build build) {
  static std::mutex mu;
  static std::map<Key, std::shared_ptr<const T>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto made = build();
  cache.emplace(key, made);
  return made;
}

}  // namespace

std::shared_ptr<const ad::SparseMap> avg_pool_map(int h, int w, int channels, int factor) {
  require(factor >= 1 && h % factor == 0 && w % factor == 0, ErrorKind::kInvalidArgument,
          "pool factor must divide the image size");
  return cached<ad::SparseMap>({0, h, w, channels, factor}, [&] {
    const int oh = h / factor, ow = w / factor;
    const double wt = 1.0 / (factor * factor);
    ad::SparseMap::Builder b(oh * ow * channels, h * w * channels);
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        for (int c = 0; c < channels; ++c) {
          for (int dy = 0; dy < factor; ++dy) {
            for (int dx = 0; dx < factor; ++dx) {
              b.add(((y * factor + dy) * w + (x * factor + dx)) * channels + c, wt);
            }
          }
          b.next_row();
        }
      }
    }
    return b.finish();
  });
}

std::shared_ptr<const ad::SparseMap> row_band_map(int h, int w, int channels, int bands) {
  require(bands >= 1 && h % bands == 0, ErrorKind::kInvalidArgument, "band count must divide the height");
  return cached<ad::SparseMap>({1, h, w, channels, bands}, [&] {
    const int rows = h / bands;
    const double wt = 1.0 / (rows * w);
    ad::SparseMap::Builder b(bands * channels, h * w * channels);
    for (int band = 0; band < bands; ++band) {
      for (int c = 0; c < channels; ++c) {
        for (int y = band * rows; y < (band + 1) * rows; ++y) {
          for (int x = 0; x < w; ++x) b.add((y * w + x) * channels + c, wt);
        }
        b.next_row();
      }
    }
    return b.finish();
  });
}

std::shared_ptr<const std::vector<int>> channel_index(int h, int w, int channels, int channel) {
  return cached<std::vector<int>>({2, h, w, channels, channel}, [&] {
    auto idx = std::make_shared<std::vector<int>>(static_cast<std::size_t>(h) * w);
    for (int p = 0; p < h * w; ++p) (*idx)[p] = p * channels + channel;
    return std::shared_ptr<const std::vector<int>>(idx);
  });
}

std::shared_ptr<const ad::SparseMap> affine_warp_map(int h, int w, int channels,
                                                     const std::array<double, 6>& a) {
  ad::SparseMap::Builder b(h * w * channels, h * w * channels);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double xn = (x + 0.5) / w, yn = (y + 0.5) / h;
      const double sx = std::clamp((a[0] * xn + a[1] * yn + a[2]) * w - 0.5, 0.0, w - 1.0);
      const double sy = std::clamp((a[3] * xn + a[4] * yn + a[5]) * h - 0.5, 0.0, h - 1.0);
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      const double fx = sx - x0, fy = sy - y0;
      for (int c = 0; c < channels; ++c) {
        auto at = [&](int yy, int xx) { return (yy * w + xx) * channels + c; };
        b.add(at(y0, x0), (1 - fy) * (1 - fx));
        b.add(at(y0, x1), (1 - fy) * fx);
        b.add(at(y1, x0), fy * (1 - fx));
        b.add(at(y1, x1), fy * fx);
        b.next_row();
      }
    }
  }
  return b.finish();
}

}  // namespace hairedit
