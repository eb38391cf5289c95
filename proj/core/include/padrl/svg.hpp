#pragma once

#include <string>
#include <vector>

namespace padrl::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

/// Grid of line charts sharing one legend (keyed by series name, in order of
/// first appearance). Output depends only on the inputs.
std::string render(const std::vector<Panel>& panels, int columns, const std::string& title = {});

/// Escapes &, <, >, " and ' for XML text and attributes.
std::string escape(const std::string& text);

}  // namespace padrl::svg
