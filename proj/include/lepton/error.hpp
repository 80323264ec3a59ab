#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace lepton {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class SingularMatrix : public Error {
public:
    using Error::Error;
};

class DegenerateLambda : public Error {
public:
    using Error::Error;
};

class NotUnitary : public Error {
public:
    using Error::Error;
};

class NoRealBranch : public Error {
public:
    using Error::Error;
};

class NotAntiHermitian : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class LatticeMismatch : public Error {
public:
    using Error::Error;
};

class GroupMismatch : public Error {
public:
    using Error::Error;
};

class MissingField : public Error {
public:
    using Error::Error;
};

/// An error tied to a set of lattice sites (singular spinor, violated
/// inequality, lost algebra membership).
class SiteError : public Error {
public:
    SiteError(const std::string& what, std::vector<std::size_t> sites)
        : Error(format(what, sites)), sites_(std::move(sites)) {}

    const std::vector<std::size_t>& sites() const noexcept { return sites_; }

private:
    static std::string format(const std::string& what, const std::vector<std::size_t>& sites) {
        if (sites.empty()) return what;
        std::ostringstream os;
        os << what << " at " << sites.size() << " site(s):";
        std::size_t shown = 0;
        for (auto s : sites) {
            if (shown++ == 8) {
                os << " ...";
                break;
            }
            os << ' ' << s;
        }
        return os.str();
    }

    std::vector<std::size_t> sites_;
};

class SingularField : public SiteError {
public:
    using SiteError::SiteError;
};

class ConstraintViolation : public SiteError {
public:
    using SiteError::SiteError;
};

class MembershipLost : public SiteError {
public:
    using SiteError::SiteError;
};

} // namespace lepton
