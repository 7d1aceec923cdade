#pragma once

#include <string>
#include <vector>

namespace hmr {

struct SuiteResult {
    std::string name;
    std::string module;  // ssm, blocks, kinematics, metrics, losses
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

struct VerifyOptions {
    // empty runs everything; otherwise matches a suite name or module
    std::string only;
    // "ssm-sign" flips the recurrent path's A_bar inside scan-equivalence, a
    // sabotage fixture proving the suite can fail
    std::string inject_fault;
    // random instances per block in the gradient suite
    int gradient_instances = 5;
};

std::vector<SuiteResult> run_verify(const VerifyOptions& opt = {});
bool all_passed(const std::vector<SuiteResult>& results);

}  // namespace hmr
