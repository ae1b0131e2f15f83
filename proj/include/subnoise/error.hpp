#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace subnoise {

// Input that violates a documented precondition or file schema.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Linear-system failure. Carries the unknowns the factorization tripped on.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, std::vector<std::string> suspects = {})
      : std::runtime_error(what), suspects_(std::move(suspects)) {}

  const std::vector<std::string>& suspects() const { return suspects_; }

private:
  std::vector<std::string> suspects_;
};

} // namespace subnoise
