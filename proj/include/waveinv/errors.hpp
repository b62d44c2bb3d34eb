#pragma once
#include <stdexcept>
#include <string>

namespace waveinv {

// Domain errors map to exit status 1, configuration errors to 2.
enum class ErrorKind { Domain, Config };

class Error : public std::runtime_error {
public:
    Error(ErrorKind k, std::string code, const std::string& msg)
        : std::runtime_error(msg), kind_(k), code_(std::move(code)) {}
    ErrorKind kind() const { return kind_; }
    const std::string& code() const { return code_; }
private:
    ErrorKind kind_;
    std::string code_;
};

inline Error domain_error(const std::string& code, const std::string& msg) {
    return Error(ErrorKind::Domain, code, code + ": " + msg);
}
inline Error config_error(const std::string& code, const std::string& msg) {
    return Error(ErrorKind::Config, code, code + ": " + msg);
}

}  // namespace waveinv
