#pragma once

// CSV layout: flat data has header x0,...,x{D-1},y; sequence data has
// seq_id,t,x0,...,x{D-1},y. Labels are 0-based integers; the y column is
// optional. Numbers are written in shortest round-trip form.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "pfmix/data.hpp"

namespace pfmix {

std::string format_double(double v);

void write_csv(std::ostream& os, const Dataset& data);
void write_csv(std::ostream& os, const SequenceDataset& data);

/// `source` only labels error messages.
Dataset read_dataset_csv(std::istream& is, const std::string& source = "<stream>");
SequenceDataset read_sequence_csv(std::istream& is, const std::string& source = "<stream>");

void save_csv(const std::filesystem::path& path, const Dataset& data);
void save_csv(const std::filesystem::path& path, const SequenceDataset& data);
Dataset load_dataset_csv(const std::filesystem::path& path);
SequenceDataset load_sequence_csv(const std::filesystem::path& path);

/// True when the header starts with seq_id,t.
bool is_sequence_csv(const std::filesystem::path& path);

}  // namespace pfmix
