#pragma once

// Command-line front end: train, grid, traverse, infer, metrics, config.
// Artifacts go to the config's output directory:
//
//   decoder.ckpt encoder.ckpt baseline.ckpt     stage checkpoints
//   <stage>_record.csv                          eval-point loss record
//   grid.pgm, grid/sample_<i>_<row>.pgm         reconstruction quartet (images)
//   grid.csv                                    quartet curves (vector outputs)
//   traverse_<latent>.pgm | .csv                latent sweeps
//   infer_<stem>.json, infer_<stem>_{g,s}.pgm   inference on a given image
//   mim_{model,ground_truth}.{csv,pgm}          MI matrix and heatmap
//   mig_{model,ground_truth}.json               MIG summary
//   rlc_correlation.csv                         f0/Q table (RLC model metrics)

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace simvae::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,            // bad arguments, config or input file
  kMissingArtifact = 2,  // a required checkpoint is absent or unreadable
  kNumeric = 3,          // NaN/Inf during training
};

/// A prerequisite artifact (checkpoint) is missing or does not fit the config.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs one command; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace simvae::cli
