#pragma once

#include <sstream>
#include <stdexcept>
#include <string>

namespace ldt {

// Error taxonomy shared by the whole toolkit. The CLI maps kinds onto
// process exit codes, so every throw site picks the kind deliberately:
//   Config  - bad flags / config file / hyperparameter domain
//   Shape   - tensor extent mismatch between operands
//   Domain  - value outside the documented input domain
//   Contract- API misuse (e.g. backward from an eval-mode cache)
//   Format  - malformed file (bad magic, truncation, CRC, ...)
//   Data    - missing or unusable input data
//   Numeric - non-finite values where finiteness is guaranteed
enum class ErrorKind {
    Config,
    Shape,
    Domain,
    Contract,
    Format,
    Data,
    Numeric,
};

inline const char* error_kind_name(ErrorKind k) {
    switch (k) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Domain: return "domain";
        case ErrorKind::Contract: return "contract";
        case ErrorKind::Format: return "format";
        case ErrorKind::Data: return "data";
        case ErrorKind::Numeric: return "numeric";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg)
        : std::runtime_error(msg), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

namespace detail {
inline void concat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void concat_into(std::ostringstream& os, const T& v, const Rest&... rest) {
    os << v;
    concat_into(os, rest...);
}
}  // namespace detail

template <typename... Parts>
std::string concat(const Parts&... parts) {
    std::ostringstream os;
    detail::concat_into(os, parts...);
    return os.str();
}

template <typename... Parts>
[[noreturn]] void raise(ErrorKind kind, const Parts&... parts) {
    throw Error(kind, concat(parts...));
}

template <typename... Parts>
void require(bool cond, ErrorKind kind, const Parts&... parts) {
    if (!cond) raise(kind, parts...);
}

}  // namespace ldt
