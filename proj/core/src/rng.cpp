#include "genesis/rng.hpp"

#include <sstream>

#include "genesis/errors.hpp"

namespace genesis {

std::string Rng::state() const {
  std::ostringstream out;
  out << engine_;
  return out.str();
}

void Rng::set_state(const std::string& state) {
  std::istringstream in(state);
  in >> engine_;
  if (in.fail()) throw Error("invalid random engine state");
}

}  // namespace genesis
