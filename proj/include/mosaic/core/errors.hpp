#pragma once

#include <stdexcept>
#include <string>

namespace mosaic {

// Error taxonomy maps onto CLI exit codes: config=2, data=3, protocol=4, divergence=5.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}
inline void check_config(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}
inline void check_data(bool cond, const std::string& msg) {
  if (!cond) throw DataError(msg);
}
inline void check_protocol(bool cond, const std::string& msg) {
  if (!cond) throw ProtocolError(msg);
}

}  // namespace mosaic
