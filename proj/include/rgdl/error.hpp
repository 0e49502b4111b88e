#pragma once

#include <stdexcept>
#include <string>

namespace rgdl {

enum class Errc {
    domain,      // argument outside the mathematical domain of an operation
    capacity,    // enumeration would exceed the configured state-space limit
    validation,  // malformed configuration or input
    dimension,   // mismatched sizes between collaborating objects
    io,          // file could not be read, written or parsed
};

const char* errc_name(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

inline void require(bool ok, Errc code, const char* what) {
    if (!ok) fail(code, what);
}

}  // namespace rgdl
