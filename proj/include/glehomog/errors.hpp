#pragma once

#include <stdexcept>
#include <string>

namespace glehomog {

enum class ErrorKind { config, numerical, dimension, refusal };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require_dims(bool ok, const std::string& what) {
    if (!ok) fail(ErrorKind::dimension, what);
}

}  // namespace glehomog
