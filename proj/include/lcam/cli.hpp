#pragma once

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>

namespace lcam::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kUsage = 2,
  kMissingFile = 3,
  kBadConfig = 4,
  kCheckpointMismatch = 5,
  kDataError = 6,
  kDiverged = 7,
  kCheckFailed = 8,
};

class MissingFile : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runs one command. Results go to `out`; failures are written to `err` as a
// single JSON record {"error": {...}} and reported through the exit code.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

std::string sha256_file(const std::filesystem::path& path);

}  // namespace lcam::cli
