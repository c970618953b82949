// Merges two fragments of a table that was broken across a page boundary
// and prints the result together with the structure score against a reference.
#include <iostream>

#include "docparse/docparse.hpp"

int main() {
  using namespace docparse;
  const TableGrid first = parse_grid(
      "<table><tr><th>Item</th><th>Notes</th></tr>"
      "<tr><td>Valve</td><td>Replace the seal every six mon</td></tr></table>");
  const TableGrid second = parse_grid(
      "<table><tr><td></td><td>ths of service.</td></tr>"
      "<tr><td>Pump</td><td>Check the bearings.</td></tr></table>");

  const MergePlan plan = decide_merge(first, second, nullptr, MergeConfig{});
  const std::string merged = serialize_grid(merge(first, second, plan));
  std::cout << to_string(plan.pattern) << "\n" << merged << "\n";

  const std::string reference =
      "<table><tr><th>Item</th><th>Notes</th></tr>"
      "<tr><td>Valve</td><td>Replace the seal every six months of service.</td></tr>"
      "<tr><td>Pump</td><td>Check the bearings.</td></tr></table>";
  std::cout << "TEDS " << teds(merged, reference, false) << "\n";
}
