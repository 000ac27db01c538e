#include "freeconv/parallel.hpp"

namespace freeconv {

int hardware_workers() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : static_cast<int>(n);
}

}  // namespace freeconv
