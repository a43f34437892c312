#pragma once

#include "kst/rational.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace kst {

using Json = nlohmann::json;

/// Reals travel as 17-significant-digit decimal strings.
Json json_real(double x);
/// Rationals travel as {"num": "...", "den": "..."}.
Json json_rational(const Rational& q);

double read_real(const Json& j);
Rational read_rational(const Json& j);

/// Field access that reports a missing key as InputError.
const Json& require(const Json& obj, const std::string& key);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Minimal CSV builder: header row, comma-separated, LF line endings.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);

    void add_row(const std::vector<std::string>& cells);
    std::size_t rows() const { return rows_; }
    const std::string& text() const { return text_; }

private:
    std::size_t cols_;
    std::size_t rows_ = 0;
    std::string text_;
};

}  // namespace kst
