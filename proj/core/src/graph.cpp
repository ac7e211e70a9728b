#include "coopseg/graph.hpp"

#include "coopseg/error.hpp"

COOPSEG_NAMESPACE_BEGIN

Graph Graph::inference() {
  Graph g;
  g.recording_ = false;
  return g;
}

bool Graph::tracks(std::initializer_list<const Tensor*> inputs) const {
  if (!recording_) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void Graph::record(std::string op, std::vector<Tensor> inputs, Tensor output, BackwardFn fn) {
  if (consumed_) throw GraphError("cannot record '" + op + "' on a consumed graph");
  nodes_.push_back(Node{std::move(op), std::move(inputs), std::move(output), std::move(fn)});
}

void backward(const Tensor& loss, Graph& graph) {
  if (graph.consumed_) throw GraphError("graph already consumed by a previous backward()");
  if (loss.numel() != 1) {
    throw GraphError("backward() needs a scalar loss, got shape " + shape_str(loss.shape()));
  }
  graph.consumed_ = true;
  if (!loss.requires_grad()) return;

  bool produced = false;
  for (const auto& node : graph.nodes_) {
    if (node.output.same_storage(loss)) {
      produced = true;
      break;
    }
  }
  Tensor seed = loss;
  seed.grad()[0] += real(1);
  if (!produced) return;  // loss is a leaf

  // Every differentiable input seen by the tape ends with a buffer, so
  // parameters on dead paths report zeros rather than nothing.
  for (auto& node : graph.nodes_) {
    for (auto& in : node.inputs) {
      if (in.requires_grad()) in.grad();
    }
  }

  for (auto it = graph.nodes_.rbegin(); it != graph.nodes_.rend(); ++it) {
    if (!it->output.has_grad()) continue;  // not on a path to the loss
    it->backward(it->output);
  }
  graph.nodes_.clear();
}

COOPSEG_NAMESPACE_END
