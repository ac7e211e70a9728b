#pragma once

#include <functional>
#include <string>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

/// Tape of the ops executed during one forward pass.
///
/// Ops append a node only when at least one input requires a gradient. The tape
/// is consumed by backward(); recording onto or differentiating a consumed
/// graph throws GraphError. A graph built with recording disabled never stores
/// nodes, which is what evaluation uses.
class Graph {
 public:
  using BackwardFn = std::function<void(const Tensor& output)>;

  struct Node {
    std::string op;
    std::vector<Tensor> inputs;
    Tensor output;
    BackwardFn backward;
  };

  Graph() = default;
  static Graph inference();

  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;
  Graph(Graph&&) = default;
  Graph& operator=(Graph&&) = default;

  bool recording() const { return recording_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<Node>& nodes() const { return nodes_; }

  /// True when an op over `inputs` should track gradients.
  bool tracks(std::initializer_list<const Tensor*> inputs) const;

  void record(std::string op, std::vector<Tensor> inputs, Tensor output, BackwardFn fn);

 private:
  friend void backward(const Tensor& loss, Graph& graph);

  std::vector<Node> nodes_;
  bool recording_ = true;
  bool consumed_ = false;
};

/// Seeds d(loss)/d(loss) = 1 and runs the tape in reverse. Gradients
/// accumulate into existing buffers; callers zero them between steps.
void backward(const Tensor& loss, Graph& graph);

COOPSEG_NAMESPACE_END
