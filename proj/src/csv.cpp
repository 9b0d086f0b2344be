#include "spine/csv.hpp"

#include <array>
#include <charconv>
#include <ostream>

namespace spine::csv {

std::string format_number(double value) {
  std::array<char, 64> buf{};
  const auto res =
      std::to_chars(buf.data(), buf.data() + buf.size(), value, std::chars_format::general, 17);
  return std::string(buf.data(), res.ptr);
}

std::vector<std::string> numbered(std::string_view prefix, Eigen::Index count) {
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index i = 1; i <= count; ++i) {
    names.push_back(std::string(prefix) + std::to_string(i));
  }
  return names;
}

RowWriter& RowWriter::add(double value) { return add(std::string_view(format_number(value))); }

RowWriter& RowWriter::add(const Eigen::Ref<const Eigen::VectorXd>& values) {
  for (Eigen::Index i = 0; i < values.size(); ++i) add(values(i));
  return *this;
}

RowWriter& RowWriter::add(std::string_view text) {
  if (!first_) out_ << ',';
  out_ << text;
  first_ = false;
  return *this;
}

void RowWriter::end() {
  out_ << '\n';
  first_ = true;
}

void write_header(std::ostream& out, const std::vector<std::string>& columns) {
  RowWriter row(out);
  for (const auto& c : columns) row.add(std::string_view(c));
  row.end();
}

void write_comment(std::ostream& out, std::string_view text) {
  out << "# ";
  for (char ch : text) out << (ch == '\n' || ch == '\r' ? ' ' : ch);
  out << '\n';
}

}  // namespace spine::csv
