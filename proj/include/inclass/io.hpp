#pragma once

#include <string>
#include <vector>

#include "inclass/net.hpp"
#include "inclass/trainer.hpp"

namespace inclass {

/// Doubles are printed with 17 significant digits everywhere, so every text
/// artifact round-trips bitwise.
std::string format_double(double value);

/// Self-describing text checkpoint: header (class counts, widths,
/// activations, sharing map, seed) followed by each layer's weights and
/// biases. Loading a checkpoint and saving it again reproduces the bytes.
void save_checkpoint(const InClassNet& net, const std::string& path);
InClassNet load_checkpoint(const std::string& path);

struct NamedDataset {
    Dataset data;
    std::vector<std::string> group_names;  // per variate; "label" column excluded
};

/// CSV with a pipe-grouped header (e.g. "x0,x1|y0" or "x|y|label"): groups
/// are variates, columns within a group are the variate's dimensions, and a
/// trailing "label" group carries integer component labels. Data rows are
/// plain comma-separated values.
void write_dataset_csv(const Dataset& data, const std::string& path,
                       const std::vector<std::string>& group_names = {});

/// JSON-lines layout for multi-dimensional variates: one object per row with
/// one array per variate plus an optional integer "label".
void write_dataset_jsonl(const Dataset& data, const std::string& path,
                         const std::vector<std::string>& group_names = {});

NamedDataset read_dataset_csv(const std::string& path);
NamedDataset read_dataset_jsonl(const std::string& path);

/// Dispatches on the file extension (.csv / .jsonl).
NamedDataset read_dataset(const std::string& path);

void write_train_log_csv(const std::vector<EpochRecord>& log, const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// FNV-1a 64-bit hash, hex-encoded.
std::string fnv1a_hex(const std::string& bytes);
std::string file_hash(const std::string& path);

/// Default per-variate group names: x, y, z for up to three variates.
std::vector<std::string> default_group_names(std::size_t variates);

} // namespace inclass
