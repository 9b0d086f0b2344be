#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace spine::csv {

/// Shortest round-trip safe text for a double (17 significant digits, %g style).
std::string format_number(double value);

/// "prefix1", "prefix2", ... "prefixN"
std::vector<std::string> numbered(std::string_view prefix, Eigen::Index count);

class RowWriter {
 public:
  explicit RowWriter(std::ostream& out) : out_(out) {}

  RowWriter& add(double value);
  RowWriter& add(const Eigen::Ref<const Eigen::VectorXd>& values);
  RowWriter& add(std::string_view text);
  void end();

 private:
  std::ostream& out_;
  bool first_ = true;
};

void write_header(std::ostream& out, const std::vector<std::string>& columns);

/// "# <text>" comment line; newlines in text are replaced by spaces.
void write_comment(std::ostream& out, std::string_view text);

}  // namespace spine::csv
