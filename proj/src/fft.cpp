#include "pic/fft.h"

#include <fftw3.h>

#include <cmath>
#include <cstring>
#include <map>
#include <memory>
#include <mutex>
#include <tuple>

namespace pic {

namespace {

struct Buffer
{
  explicit Buffer(std::size_t n)
      : ptr{fftw_alloc_complex(n)}
  {
  }
  ~Buffer() { fftw_free(ptr); }
  Buffer(Buffer const &) = delete;
  Buffer &operator=(Buffer const &) = delete;
  fftw_complex *ptr;
};

// FFTW planning is not thread-safe; execution on fresh arrays is.
class PlanCache
{
public:
  ~PlanCache()
  {
    for (auto &[key, plan] : plans_) {
      fftw_destroy_plan(plan);
    }
  }

  fftw_plan get(Index h, Index w, int sign)
  {
    std::lock_guard lock(mutex_);
    auto const key = std::make_tuple(h, w, sign);
    if (auto it = plans_.find(key); it != plans_.end()) {
      return it->second;
    }
    Buffer in(static_cast<std::size_t>(h * w));
    Buffer out(static_cast<std::size_t>(h * w));
    auto plan = fftw_plan_dft_2d(static_cast<int>(h), static_cast<int>(w), in.ptr, out.ptr, sign, FFTW_ESTIMATE);
    plans_.emplace(key, plan);
    return plan;
  }

private:
  std::mutex mutex_;
  std::map<std::tuple<Index, Index, int>, fftw_plan> plans_;
};

PlanCache &cache()
{
  static PlanCache c;
  return c;
}

ComplexGrid transform(ComplexGrid const &x, int sign)
{
  std::size_t const n = static_cast<std::size_t>(x.size());
  auto plan = cache().get(x.height(), x.width(), sign);
  Buffer in(n);
  Buffer out(n);
  static_assert(sizeof(Cx) == sizeof(fftw_complex));
  std::memcpy(in.ptr, x.values().data(), n * sizeof(Cx));
  fftw_execute_dft(plan, in.ptr, out.ptr);
  double const scale = 1.0 / std::sqrt(static_cast<double>(n));
  ComplexGrid y(x.height(), x.width());
  for (std::size_t i = 0; i < n; i++) {
    y[static_cast<Index>(i)] = Cx(out.ptr[i][0] * scale, out.ptr[i][1] * scale);
  }
  return y;
}

// shift = +1 moves index 0 to the centre, -1 undoes it.
ComplexGrid circshift(ComplexGrid const &x, int dir)
{
  Index const h = x.height();
  Index const w = x.width();
  Index const sr = dir > 0 ? h / 2 : h - h / 2;
  Index const sc = dir > 0 ? w / 2 : w - w / 2;
  ComplexGrid y(h, w);
  for (Index r = 0; r < h; r++) {
    Index const rr = (r + sr) % h;
    for (Index c = 0; c < w; c++) {
      y(rr, (c + sc) % w) = x(r, c);
    }
  }
  return y;
}

} // namespace

ComplexGrid fft2u(ComplexGrid const &x)
{
  return transform(x, FFTW_FORWARD);
}

ComplexGrid ifft2u(ComplexGrid const &k)
{
  return transform(k, FFTW_BACKWARD);
}

ComplexGrid fft2c(ComplexGrid const &x)
{
  return circshift(fft2u(x), +1);
}

ComplexGrid ifft2c(ComplexGrid const &k)
{
  return ifft2u(circshift(k, -1));
}

} // namespace pic
