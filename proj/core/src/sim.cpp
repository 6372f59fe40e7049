namespace weavesim {}
