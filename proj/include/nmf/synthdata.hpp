#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "nmf/recurrent.hpp"
#include "nmf/tensor.hpp"

namespace nmf {

/// First-order Markov process over action classes with per-class duration
/// ranges. Self-transitions are not allowed: segments end only when their
/// duration expires.
struct ActionGrammar {
  std::vector<std::string> classes;
  std::vector<std::vector<double>> transition;  // C x C, row-stochastic, zero diagonal
  std::vector<double> start_dist;
  std::vector<int> duration_min;
  std::vector<int> duration_max;

  std::size_t num_classes() const { return classes.size(); }

  // Throws ConfigError on any violated invariant.
  void validate() const;
  // Zeroes the diagonal and renormalises every row.
  void drop_self_transitions();
};

/// A choice among sub-grammars made once per sequence. The choice persists
/// for the whole sequence, so a sub-grammar identified early determines
/// transitions much later: first-order statistics pooled over the menu are
/// not enough to predict them.
struct GrammarMenu {
  std::vector<ActionGrammar> grammars;
  std::vector<double> weights;

  std::size_t num_classes() const;
  void validate() const;
};

struct Sample {
  std::vector<int> labels;
  Tensor features;  // [T x feature_dim]

  std::size_t length() const { return labels.size(); }
};

struct FeaturePrototypes {
  Tensor prototypes;  // [C x feature_dim]
  double noise_std = 0.0;

  // Prototype entries drawn from N(0, 1).
  static FeaturePrototypes random(std::size_t num_classes, std::size_t feature_dim, double noise_std, Rng& rng);
};

std::vector<int> sample_labels(const ActionGrammar& grammar, std::size_t length, Rng& rng);
std::vector<int> sample_labels(const GrammarMenu& menu, std::size_t length, Rng& rng);

Tensor synth_features(std::span<const int> labels, const FeaturePrototypes& prototypes, Rng& rng);

Tensor one_hot(std::span<const int> labels, std::size_t num_classes);
Tensor one_hot(int label, std::size_t num_classes);

/// Replaces the label of each contiguous segment, with probability p, by a
/// different class drawn uniformly. Segment boundaries are preserved.
std::vector<int> corrupt_labels(std::span<const int> labels, std::size_t num_classes, double p, Rng& rng);

// Lengths of the maximal runs of equal labels.
std::vector<std::size_t> segment_lengths(std::span<const int> labels);

// --- Presets -----------------------------------------------------------

// Classes 0 -> 1 -> ... -> C-1 -> 0 with a fixed duration, always starting at 0.
ActionGrammar cycle_grammar(std::size_t num_classes, int duration);

// Random dense grammar: C classes, durations in [duration_min, duration_max].
ActionGrammar random_grammar(std::size_t num_classes, int duration_min, int duration_max, Rng& rng);

/// Eight-class menu of three recipes that share classes. Each recipe is a
/// deterministic cycle through a subset of the classes; at a shared class the
/// successor depends on the recipe, which only earlier context reveals.
GrammarMenu composed_grammar();

// --- Corpus ------------------------------------------------------------

struct CorpusSpec {
  std::size_t sequence_length = 120;
  std::size_t num_train = 200;
  std::size_t num_test = 50;
  std::size_t feature_dim = 16;
  double noise_std = 0.5;
};

struct Corpus {
  GrammarMenu grammar;
  std::size_t num_classes = 0;
  std::size_t feature_dim = 0;
  std::vector<Sample> train;
  std::vector<Sample> test;
};

Corpus generate_corpus(const GrammarMenu& grammar, const CorpusSpec& spec, std::uint64_t seed);

// --- Files -------------------------------------------------------------

// "NMNF" | u32 version=1 | u32 T | u32 D | T*D little-endian float32, row-major.
void write_features(const std::filesystem::path& path, const Tensor& features);
Tensor read_features(const std::filesystem::path& path);

// One base-10 class id per line, each terminated by '\n'.
void write_labels(const std::filesystem::path& path, std::span<const int> labels);
std::vector<int> read_labels(const std::filesystem::path& path);

// JSON document. A plain grammar has keys classes, transition, start_dist,
// duration_min, duration_max; a menu has keys menu (list of grammars) and weights.
void write_grammar(const std::filesystem::path& path, const GrammarMenu& grammar);
GrammarMenu read_grammar(const std::filesystem::path& path);

// Directory layout: grammar.json, manifest.json, {train,test}/seq_NNNN.{feat,labels}.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

}  // namespace nmf
