#pragma once

#include <iosfwd>

namespace pmx {

struct VerifyOptions {
    /// Test hook: corrupts one tolerance so the failure path is exercised.
    bool inject_failure = false;
};

/// Runs the on-demand oracle suite (formula-vs-quadrature identities,
/// conjugacy, CRP laws, kernel-variant equivalence), printing one PASS/FAIL
/// line per check. Returns the number of failed checks.
int run_verification(std::ostream& out, const VerifyOptions& opts = {});

}  // namespace pmx
