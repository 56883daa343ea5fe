#include "hairedit/core/blend.hpp"

#include <algorithm>

#include "hairedit/error.hpp"

namespace hairedit {

namespace {

void require_same_size(const BinaryMask& a, const BinaryMask& b) {
  require(a.height() == b.height() && a.width() == b.width(), ErrorKind::kShapeMismatch,
          "masks " + std::to_string(a.height()) + "x" + std::to_string(a.width()) + " and " +
              std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

}  // namespace

FeatureMap blend_features(const FeatureMap& a, const FeatureMap& b, const BinaryMask& m) {
  require(a.stage() == b.stage(), ErrorKind::kShapeMismatch,
          std::string("blending features from stages ") + stage_name(a.stage()) + " and " +
              stage_name(b.stage()));
  require(a.shape() == b.shape(), ErrorKind::kShapeMismatch,
          "blending " + to_string(a.shape()) + " with " + to_string(b.shape()));
  require(m.height() == a.height() && m.width() == a.width(), ErrorKind::kShapeMismatch,
          "mask " + std::to_string(m.height()) + "x" + std::to_string(m.width()) +
              " does not gate features " + to_string(a.shape()));

  FeatureMap out(a.stage(), a.shape());
  const int channels = a.channels();
  auto av = a.data();
  auto bv = b.data();
  auto ov = out.data();
  auto mv = m.data();
  for (std::size_t p = 0; p < mv.size(); ++p) {
    // Select instead of a*m + b*(1-m) so that 0/1 cells copy bit patterns
    // (including signed zeros) verbatim.
    const auto& src = mv[p] != 0.0 ? av : bv;
    std::copy_n(src.begin() + p * channels, channels, ov.begin() + p * channels);
  }
  return out;
}

BinaryMask downsample_mask(const BinaryMask& m, int target_h, int target_w) {
  require(target_h > 0 && target_w > 0, ErrorKind::kInvalidArgument, "target size must be positive");
  require(target_h <= m.height() && target_w <= m.width(), ErrorKind::kInvalidArgument,
          "downsample_mask cannot upsample " + std::to_string(m.height()) + "x" +
              std::to_string(m.width()) + " to " + std::to_string(target_h) + "x" +
              std::to_string(target_w));

  // Exact area weights: each source pixel contributes the overlap of its
  // footprint with the target cell, so non-integer ratios are handled too.
  const double sy = static_cast<double>(m.height()) / target_h;
  const double sx = static_cast<double>(m.width()) / target_w;
  BinaryMask out(target_h, target_w);
  for (int ty = 0; ty < target_h; ++ty) {
    const double y0 = ty * sy, y1 = (ty + 1) * sy;
    for (int tx = 0; tx < target_w; ++tx) {
      const double x0 = tx * sx, x1 = (tx + 1) * sx;
      double acc = 0.0, area = 0.0;
      for (int y = static_cast<int>(y0); y < m.height() && y < y1; ++y) {
        const double wy = std::min<double>(y + 1, y1) - std::max<double>(y, y0);
        if (wy <= 0) continue;
        for (int x = static_cast<int>(x0); x < m.width() && x < x1; ++x) {
          const double wx = std::min<double>(x + 1, x1) - std::max<double>(x, x0);
          if (wx <= 0) continue;
          acc += wy * wx * m.at(y, x);
          area += wy * wx;
        }
      }
      out.set(ty, tx, acc >= 0.5 * area);
    }
  }
  return out;
}

BinaryMask downsample_mask_any(const BinaryMask& m, int target_h, int target_w) {
  require(target_h > 0 && target_w > 0 && target_h <= m.height() && target_w <= m.width(),
          ErrorKind::kInvalidArgument, "downsample_mask_any needs a smaller positive target");
  BinaryMask out(target_h, target_w);
  for (int y = 0; y < m.height(); ++y) {
    const int ty = static_cast<int>(static_cast<long>(y) * target_h / m.height());
    for (int x = 0; x < m.width(); ++x) {
      if (m.at(y, x) == 0.0) continue;
      out.set(ty, static_cast<int>(static_cast<long>(x) * target_w / m.width()), true);
    }
  }
  return out;
}

BinaryMask upsample_mask(const BinaryMask& m, int target_h, int target_w) {
  require(target_h >= m.height() && target_w >= m.width(), ErrorKind::kInvalidArgument,
          "upsample_mask cannot downsample");
  BinaryMask out(target_h, target_w);
  for (int y = 0; y < target_h; ++y) {
    const int sy = static_cast<int>(static_cast<long>(y) * m.height() / target_h);
    for (int x = 0; x < target_w; ++x) {
      const int sx = static_cast<int>(static_cast<long>(x) * m.width() / target_w);
      out.set(y, x, m.at(sy, sx) != 0.0);
    }
  }
  return out;
}

BinaryMask resize_mask(const BinaryMask& m, int target_h, int target_w) {
  if (target_h == m.height() && target_w == m.width()) return m;
  if (target_h <= m.height() && target_w <= m.width()) return downsample_mask(m, target_h, target_w);
  if (target_h >= m.height() && target_w >= m.width()) return upsample_mask(m, target_h, target_w);
  fail(ErrorKind::kInvalidArgument, "mixed up/down mask resize");
}

BinaryMask dilate_mask(const BinaryMask& m, int radius) {
  require(radius >= 0, ErrorKind::kInvalidArgument, "dilation radius must be >= 0");
  if (radius == 0) return m;
  BinaryMask out(m.height(), m.width());
  // Separable max filter: rows then columns.
  BinaryMask rows(m.height(), m.width());
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool on = false;
      for (int dx = -radius; dx <= radius && !on; ++dx) {
        const int xx = x + dx;
        on = xx >= 0 && xx < m.width() && m.at(y, xx) != 0.0;
      }
      rows.set(y, x, on);
    }
  }
  for (int y = 0; y < m.height(); ++y) {
    for (int x = 0; x < m.width(); ++x) {
      bool on = false;
      for (int dy = -radius; dy <= radius && !on; ++dy) {
        const int yy = y + dy;
        on = yy >= 0 && yy < m.height() && rows.at(yy, x) != 0.0;
      }
      out.set(y, x, on);
    }
  }
  return out;
}

BinaryMask mask_intersection_nonhair(const BinaryMask& hair_a, const BinaryMask& hair_b) {
  require_same_size(hair_a, hair_b);
  std::vector<double> data(hair_a.data().size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = (1.0 - hair_a.data()[i]) * (1.0 - hair_b.data()[i]);
  }
  return BinaryMask(hair_a.height(), hair_a.width(), std::move(data));
}

BinaryMask mask_union(const BinaryMask& a, const BinaryMask& b) {
  require_same_size(a, b);
  std::vector<double> data(a.data().size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = std::max(a.data()[i], b.data()[i]);
  }
  return BinaryMask(a.height(), a.width(), std::move(data));
}

BinaryMask mask_complement(const BinaryMask& m) {
  std::vector<double> data(m.data().size());
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = 1.0 - m.data()[i];
  return BinaryMask(m.height(), m.width(), std::move(data));
}

}  // namespace hairedit
