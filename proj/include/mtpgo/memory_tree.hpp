#pragma once

#include "mtpgo/pose4.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace mtpgo {

using NodeKey = std::uint64_t;

// Saved rel poses for a set of nodes, valid as long as the tree topology is
// unchanged (structure_version match is enforced on restore).
struct PathSnapshot {
  std::uint64_t structure_version = 0;
  std::vector<std::pair<NodeKey, Pose4>> states;
};

// Read-only view of one node, for tests and debug tooling.
struct NodeView {
  NodeKey key = 0;
  Pose4 rel;
  int height = 1;
  std::optional<NodeKey> parent;
  std::optional<NodeKey> left;
  std::optional<NodeKey> right;
};

// AVL-balanced search tree over keyframe keys. Every node stores its pose
// relative to its tree parent (the root stores its global pose), so the global
// pose of a node is the composition of rel poses along the root chain.
// Rebalancing rotations re-express the affected rel poses locally; global
// poses are preserved by every mutation.
//
// Single writer; concurrent readers are safe only while no mutating member
// is running.
class MemoryTree {
 public:
  MemoryTree();
  ~MemoryTree();
  MemoryTree(MemoryTree&&) noexcept;
  MemoryTree& operator=(MemoryTree&&) noexcept;
  MemoryTree(const MemoryTree&) = delete;
  MemoryTree& operator=(const MemoryTree&) = delete;

  // Inserts a keyframe given its global pose. Throws on duplicate key.
  void insert(NodeKey key, const Pose4& global);

  // Removes a keyframe; remaining global poses are unchanged. Throws on
  // missing key.
  void remove(NodeKey key);

  // Pose of the node in the root's (global) frame. compose_steps, when given,
  // receives the number of pose compositions performed (bounded by height).
  Pose4 global_pose(NodeKey key, int* compose_steps = nullptr) const;

  // Lowest common ancestor by BST descent.
  NodeKey lca(NodeKey a, NodeKey b) const;

  // Tree path a .. lca .. b, inclusive of both endpoints.
  std::vector<NodeKey> path(NodeKey a, NodeKey b) const;

  PathSnapshot snapshot(const std::vector<NodeKey>& keys) const;
  PathSnapshot snapshot_path(NodeKey a, NodeKey b) const;
  // Writes snapshotted rel poses back. Throws if the topology changed since
  // capture.
  void restore(const PathSnapshot& snap);

  const Pose4& rel_pose(NodeKey key) const;
  // Overwrites a node's rel pose (solver write access). Not a structural
  // change: snapshots stay valid.
  void set_rel_pose(NodeKey key, const Pose4& rel);

  bool contains(NodeKey key) const;
  std::size_t size() const;
  bool empty() const { return size() == 0; }
  int height() const;
  NodeKey root_key() const;
  std::uint64_t structure_version() const { return version_; }

  // [min key, max key] of the subtree rooted at key.
  std::pair<NodeKey, NodeKey> subtree_interval(NodeKey key) const;

  NodeView view(NodeKey key) const;
  std::vector<NodeKey> keys_inorder() const;

  // Deterministic pre-order dump: one line per node with key, rel pose
  // components and child presence flags. Equal trees produce equal strings.
  std::string serialize() const;

  // Throws std::logic_error if any structural invariant is broken (BST order,
  // AVL balance, stored heights, parent links, size, height bound).
  void validate() const;

 private:
  struct Node;

  static int node_height(const Node* n);
  static void update_height(Node* n);
  static int balance_factor(const Node* n);
  Node* find(NodeKey key) const;
  Node* require(NodeKey key) const;
  std::unique_ptr<Node>& slot_of(Node* n);
  Pose4 global_of(const Node* n, int* compose_steps = nullptr) const;
  Node* lca_node(NodeKey a, NodeKey b) const;
  Node* rotate_left(Node* y);
  Node* rotate_right(Node* y);
  Node* rebalance(Node* n);
  void retrace(Node* n);

  std::unique_ptr<Node> root_;
  std::unordered_map<NodeKey, Node*> index_;
  std::uint64_t version_ = 0;
};

}  // namespace mtpgo
