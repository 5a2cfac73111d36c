#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace xfrl::rep {

// Shortest decimal form that round-trips the exact double; used for every
// numeric cell so identical runs produce byte-identical files.
std::string fmt(double v);

// One training-log row. `mmd` holds the per-tap penalty values in tap order
// and may be empty for plain supervised runs. `test_acc` < 0 means the epoch
// was not evaluated and the cell is left empty.
struct EpochRow {
    std::size_t epoch = 0;
    double loss_cls = 0.0;
    std::vector<double> mmd;
    double loss_total = 0.0;
    double test_acc = -1.0;
};

// Header names the taps: mmd_l<id> per entry of `tap_ids` (1-based layer ids).
void write_train_log(const std::filesystem::path& path, const std::vector<std::size_t>& tap_ids,
                     const std::vector<EpochRow>& rows);

// One transferability-sweep row; k = 0 is the no-transfer baseline.
struct SweepRow {
    std::size_t k = 0;
    double accuracy = 0.0;
    double relative = 0.0;  // accuracy minus the baseline accuracy
};

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

// Accuracy-vs-k polyline with a zero-anchored accuracy axis.
void write_sweep_svg(const std::filesystem::path& path, const std::vector<SweepRow>& rows);

}  // namespace xfrl::rep
