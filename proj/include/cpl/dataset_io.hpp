#pragma once

#include <iosfwd>
#include <string>

#include "cpl/types.hpp"

namespace cpl {

// Text dataset format: header "K=<int>,dim=<int>,oracle=<0|1>", then one line
// per instance "<features>|<candidate ids>|<truth>" with comma-separated
// features, semicolon-separated candidates, and the truth field present only
// in oracle mode. Features are written with 17 significant digits so the
// round trip is exact.
void write_dataset(const PartialDataset& d, std::ostream& os);
PartialDataset read_dataset(std::istream& is);
void save_dataset(const PartialDataset& d, const std::string& path);
PartialDataset load_dataset(const std::string& path);

// Optional ingestion of IDX image/label pairs (big-endian magics 0x00000803
// and 0x00000801). Pixels are scaled to [0,1]; the result is a precise
// oracle dataset.
PartialDataset load_idx(const std::string& images_path,
                        const std::string& labels_path);

}  // namespace cpl
