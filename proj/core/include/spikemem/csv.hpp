#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace spikemem::csv {

// Shortest decimal form that parses back to the same double.
std::string number(double v);

std::vector<std::string> split_line(std::string_view line);

// Parses a CSV document with a header row; fields are split on commas, no quoting.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const;
};

Table parse(std::string_view text);

}  // namespace spikemem::csv
