#include "kst/io.hpp"

#include "kst/errors.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace kst {

Json json_real(double x) { return decimal17(x); }

Json json_rational(const Rational& q) {
    return Json{{"num", q.get_num().get_str(10)}, {"den", q.get_den().get_str(10)}};
}

double read_real(const Json& j) {
    if (j.is_number()) return j.get<double>();
    if (!j.is_string()) throw InputError("expected a real as decimal string");
    const std::string s = j.get<std::string>();
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE)
        throw InputError("malformed real '" + s + "'");
    return v;
}

Rational read_rational(const Json& j) {
    if (j.is_string()) return parse_fraction(j.get<std::string>());
    if (!j.is_object()) throw InputError("expected a rational object");
    BigInt num, den;
    if (num.set_str(require(j, "num").get<std::string>(), 10) != 0 ||
        den.set_str(require(j, "den").get<std::string>(), 10) != 0 || den == 0)
        throw InputError("malformed rational object");
    Rational q(num, den);
    q.canonicalize();
    return q;
}

const Json& require(const Json& obj, const std::string& key) {
    if (!obj.is_object() || !obj.contains(key)) throw InputError("missing field '" + key + "'");
    return obj.at(key);
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw InputError("write failed for '" + path + "'");
}

CsvTable::CsvTable(std::vector<std::string> header) : cols_(header.size()) {
    add_row(header);
    rows_ = 0;
}

void CsvTable::add_row(const std::vector<std::string>& cells) {
    if (cells.size() != cols_) throw InternalError("csv row width mismatch");
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) text_ += ',';
        text_ += cells[i];
    }
    text_ += '\n';
    ++rows_;
}

}  // namespace kst
