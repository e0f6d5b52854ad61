#pragma once

#include "fp3d/geometry.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fp3d {

struct Module
{
    int id = 0;
    std::string name;
    int width = 1;
    int height = 1;

    [[nodiscard]] int area() const { return width * height; }

    friend bool operator==(const Module &, const Module &) = default;
};

/// Hyperedge over module ids. Pins are distinct.
struct Net
{
    int id = 0;
    std::vector<int> pins;

    friend bool operator==(const Net &, const Net &) = default;
};

struct Netlist
{
    std::string name;
    std::vector<Module> modules;
    std::vector<Net> nets;

    [[nodiscard]] int size() const { return static_cast<int>(modules.size()); }
    [[nodiscard]] std::optional<int> find(std::string_view module_name) const;

    friend bool operator==(const Netlist &, const Netlist &) = default;
};

/// Raised by the parsers. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error
{
  public:
    ParseError(const std::string &what, int line = 0);
    [[nodiscard]] int line() const { return line_; }

  private:
    int line_;
};

/// Symmetric count of nets shared by each module pair; zero diagonal.
class NetCountMatrix
{
  public:
    NetCountMatrix() = default;
    explicit NetCountMatrix(int n) : n_(n), counts_(static_cast<std::size_t>(n) * n, 0) {}

    [[nodiscard]] int size() const { return n_; }
    [[nodiscard]] int operator()(int a, int b) const { return counts_[static_cast<std::size_t>(a) * n_ + b]; }
    void add(int a, int b);

    /// Number of distinct modules sharing at least one net with `a`.
    [[nodiscard]] int degree(int a) const;
    [[nodiscard]] int max_degree() const;

  private:
    int n_ = 0;
    std::vector<int> counts_;
};

NetCountMatrix net_count_matrix(const Netlist &netlist);

/// Empty iff every module fits the canvas footprint and the type
/// invariants hold (dims >= 1, dense ids, unique names, valid pins).
std::vector<std::string> validate(const Netlist &netlist, const CanvasConfig &cfg);

/// GSRC bookshelf `.blocks` + `.nets`. Hard blocks take their bounding
/// rectangle, soft blocks become squares of the same area. Dimensions are
/// scaled so the largest one maps to `ceil(canvas.width / 4)` cells and
/// rounded up. Terminal pins are dropped; nets left with fewer than two
/// module pins are dropped.
Netlist parse_gsrc(std::string_view blocks_text, std::string_view nets_text,
                   const CanvasConfig &canvas = {});

/// JSON: {"name": ..., "modules": [{"name","w","h"}], "nets": [[names]]}.
Netlist parse_canonical(std::string_view text);
std::string serialize_canonical(const Netlist &netlist);

/// FNV-1a over the canonical serialization, as 16 hex digits.
std::string content_hash(const Netlist &netlist);

/// Three-module fixture: A 2x2, B 2x1, C 1x1; nets {A,B}, {B,C}, {A,B}.
Netlist make_toy3();

/// Seeded random netlist. Module sides are drawn from [1, max_side]; every
/// net has 2..4 distinct pins.
Netlist random_netlist(int modules, int nets, int max_side, std::uint64_t seed);

} // namespace fp3d
