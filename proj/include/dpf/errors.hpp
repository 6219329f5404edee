#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dpf {

/// Base for every error raised by the library. The CLI maps these to exit codes.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
  public:
    SyntaxError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

class MissingSection : public Error {
  public:
    explicit MissingSection(const std::string& section)
        : Error("missing section '" + section + "'"), section_(section) {}
    const std::string& section() const { return section_; }

  private:
    std::string section_;
};

/// One violated invariant, with the rule that fired and where.
struct Diagnostic {
    std::string rule;
    std::string locus;
    std::string message;
};

class ValidationError : public Error {
  public:
    explicit ValidationError(std::vector<Diagnostic> diagnostics);
    ValidationError(std::string rule, std::string locus, std::string message)
        : ValidationError(std::vector<Diagnostic>{{std::move(rule), std::move(locus), std::move(message)}}) {}
    const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

  private:
    std::vector<Diagnostic> diagnostics_;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

class EndpointOutsideSubset : public Error {
  public:
    using Error::Error;
};

/// pᵀMp ≤ 0 inside conjugate gradients: the operator is not positive definite.
class BreakdownError : public Error {
  public:
    using Error::Error;
};

class SingularSystem : public Error {
  public:
    using Error::Error;
};

class InnerNoConvergence : public Error {
  public:
    InnerNoConvergence(const std::string& what, int region, double gradient_norm, std::vector<double> last_iterate)
        : Error(what), region_(region), gradient_norm_(gradient_norm), last_iterate_(std::move(last_iterate)) {}
    int region() const { return region_; }
    double gradient_norm() const { return gradient_norm_; }
    const std::vector<double>& last_iterate() const { return last_iterate_; }

  private:
    int region_;
    double gradient_norm_;
    std::vector<double> last_iterate_;
};

class NoConvergence : public Error {
  public:
    using Error::Error;
};

class SingularJacobian : public Error {
  public:
    using Error::Error;
};

}  // namespace dpf
