#pragma once

// File formats.
//
// Matrix (binary): "UOSM0001", u32 rows, u32 cols, rows*cols f64 row-major.
// Matrix (text):   first line "rows cols", then one line per row,
//                  whitespace-separated, shortest round-trip decimal.
// Dictionary:      "UOSD0001", u32 m, u32 n, u32 L, L x u32 group sizes,
//                  then m*n f64 column-major. Text form: "m n L", a line of
//                  group sizes, then m lines of n values.
// Alignment:       one decimal class index per line.
// Transitions:     L, then L lines of L probabilities, then L initial
//                  probabilities.
// All integers and floats in binary files are little-endian. Readers detect
// binary vs text by the magic. Writers go through a temp file and rename.

#include "uos/core.hpp"
#include "uos/evalkit.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace uos {

enum class FileFormat { Binary, Text };

FileFormat parse_file_format(const std::string& name);

// Writes `content` to a sibling temp file, then renames it over `path`.
// Throws Io; leaves nothing behind on failure.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

std::string encode_matrix(const RealMatrix& m, FileFormat format);
RealMatrix decode_matrix(const std::string& bytes, const std::string& source = "matrix");
void write_matrix(const std::filesystem::path& path, const RealMatrix& m, FileFormat format = FileFormat::Binary);
RealMatrix read_matrix(const std::filesystem::path& path);

std::string encode_dictionary(const GroupedDictionary& d, FileFormat format);
GroupedDictionary decode_dictionary(const std::string& bytes, const std::string& source = "dictionary");
void write_dictionary(const std::filesystem::path& path, const GroupedDictionary& d,
                      FileFormat format = FileFormat::Binary);
GroupedDictionary read_dictionary(const std::filesystem::path& path);

// Class count is max label + 1 unless `num_classes` is given.
ClassAlignment parse_alignment(const std::string& text, int num_classes = 0,
                               const std::string& source = "alignment");
std::string format_alignment(const ClassAlignment& align);
void write_alignment(const std::filesystem::path& path, const ClassAlignment& align);
ClassAlignment read_alignment(const std::filesystem::path& path, int num_classes = 0);

TransitionModel parse_transitions(const std::string& text, const std::string& source = "transitions");
std::string format_transitions(const TransitionModel& tm);
void write_transitions(const std::filesystem::path& path, const TransitionModel& tm);
TransitionModel read_transitions(const std::filesystem::path& path);

// Shortest decimal that parses back to the same double.
std::string format_double(double v);

}  // namespace uos
